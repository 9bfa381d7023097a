"""Adam optimizer with fixed hyperparameters and the token-based warmup/decay learning-rate schedule."""
