"""Entry point for the tipset finality calculator CLI."""

from .cli import run

if __name__ == "__main__":
    run()
