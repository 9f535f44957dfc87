"""
Entry point for running the package as a module.

Usage:
    python -m src gen-data --kind four-modes --seed 7
    python -m src pipeline --config config/config.example.yaml --scale 0.1
    python -m src eval --model output/model.json --samples 500
    python -m src version
"""

from src.cli import main

if __name__ == "__main__":
    main()
