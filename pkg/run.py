#!/usr/bin/env python3
"""
Main run script for relkernel

    python run.py sweep --config configs/sweep_interval.ini
    python run.py levy --config configs/levy.ini --set model.m=2
"""
import sys

from relkernel.cli_layer import main

if __name__ == "__main__":
    sys.exit(main())
