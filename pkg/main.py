"""Ponto de entrada: `python main.py <subcomando> [flags]` (veja src/cli.py)."""

from src.cli import run

if __name__ == "__main__":
    run()
