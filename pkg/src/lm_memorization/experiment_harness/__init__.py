"""Run configuration, the resumable training loop, metric logs, the experiment families built on them, figure data and the command line interface."""
