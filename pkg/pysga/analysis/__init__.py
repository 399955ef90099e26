"""Scene graph anticipation with learned differential equations."""

from pysga import __version__  # noqa
