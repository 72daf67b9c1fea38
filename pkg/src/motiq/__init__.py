"""Hierarchical digraph representation of quantum convolutional neural networks."""
