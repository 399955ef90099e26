"""All this stuff is to get the version from setup.py."""

try:
    from importlib.metadata import version, PackageNotFoundError
except ImportError:  # Python < 3.8
    from importlib_metadata import version, PackageNotFoundError

try:
    __version__ = version('pysga')
except PackageNotFoundError:
    __version__ = 'Version information not found. Please install this project \
                   with setup.py)'
