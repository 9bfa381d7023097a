"""Dense numpy tensors with reverse-mode automatic differentiation and finite-difference verification."""
