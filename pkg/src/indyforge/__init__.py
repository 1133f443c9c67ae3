"""indyforge: genesis, governance and deployment tooling for Indy-style pools."""

__version__ = "0.1.0"
