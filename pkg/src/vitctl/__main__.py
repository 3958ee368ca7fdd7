"""Entry point for python -m vitctl."""

from vitctl.cli import app

app()
