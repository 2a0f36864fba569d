"""Rate regions, duality checks and coding simulations for cooperative
source coding (WAK with encoder cooperation) and the semi-deterministic
broadcast channel with decoder cooperation."""

from importlib.resources import files

__version__ = "0.1.0"


def data_path(name: str):
    """Path of a bundled fixture file."""
    return files(__name__).joinpath("data", name)
