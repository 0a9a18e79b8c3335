"""Independent PyTorch re-implementation of the GNN inference used by the
main engine, plus numerical parity checking through the shared weight-file
and dataset formats."""

__version__ = "0.1.0"
