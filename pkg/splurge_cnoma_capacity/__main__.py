#!/usr/bin/env python3
"""
Entry point for running the capacity toolkit as a module.

This allows running the CLI with: python -m splurge_cnoma_capacity
"""

from splurge_cnoma_capacity.cli import main

if __name__ == '__main__':
    main()
