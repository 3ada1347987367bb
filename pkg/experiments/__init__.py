"""Experiment package: config model, Monte-Carlo runner, sweeps, table reproduction and the CLI."""
