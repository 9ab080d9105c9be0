"""masked-regression - Gaussian linear regression under coordinate-wise erasure."""
from .engine import main, VERSION  # noqa: F401
