"""Device / edge / cloud task offloading: cost model, DQN engine, meta-initialization."""
