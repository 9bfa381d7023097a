"""Human-readable logging for training runs, sweeps and command line commands."""
