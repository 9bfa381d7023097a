"""
lm_memorization: a desk-scale laboratory for measuring how transformer language models memorize and forget their training data.

The package trains small causal and masked language models on a numpy autodiff engine and records exact-match memorization over training:

Core Functionality:
    - run_training(): Train one configured run with resumable checkpoints and a JSONL metric log.
    - run_scaling_sweep(), run_lr_sweep(), run_data_size_sweep(), run_docid_experiment(): Epochs to memorize a fraction of the training data across sizes, learning rates, dataset sizes and unique identifier arms.
    - run_forgetting(), forgetting_baseline_vs_scale(), run_repetition_study(), order_invariance_study(): Inject a held-out special batch and track how much of it stays memorized.
    - emit_figure_data(): Write the CSV tables of completed experiments.
"""
