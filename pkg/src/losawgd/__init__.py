"""losaw mini-batch gradient descent on a small dense network."""

from src.losawgd.checkpoint import load_network, save_network, write_trace
from src.losawgd.network import DenseNet, Gradients, backward, forward, output_input_gradients
from src.losawgd.optim import Adam
from src.losawgd.trainer import (
    GdConfig,
    TraceRow,
    gd_importance,
    init_network,
    saliency,
    train_losawgd,
    train_standard,
)

__all__ = [
    "Adam",
    "DenseNet",
    "GdConfig",
    "Gradients",
    "TraceRow",
    "backward",
    "forward",
    "gd_importance",
    "init_network",
    "load_network",
    "output_input_gradients",
    "saliency",
    "save_network",
    "train_losawgd",
    "train_standard",
    "write_trace",
]
