"""Decentralized multi-agent RL with dual acting modes and a shared attention
teacher selector, plus the grid environments and experiment harness used to
exercise it at desk scale."""

__version__ = "0.1.0"
