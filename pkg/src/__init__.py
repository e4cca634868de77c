"""reefforge: dados sintéticos de recifes de ostras e avaliação de detectores."""

__version__ = "0.1.0"
