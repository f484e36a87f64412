"""Trace-driven simulation of TTL-constrained opportunistic forwarding with transient clusters."""

__version__ = "0.1.0"
