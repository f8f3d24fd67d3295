#!/usr/bin/env python3
"""
cavion - Single-Ion Cavity Simulator
Launcher Script
"""
from cavion.main import main

if __name__ == "__main__":
    main()
