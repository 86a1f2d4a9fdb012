"""Simulation harness: bus, adversaries, scenarios, property checkers, bench."""
