"""Conversational orchestration and deterministic simulation for
human-robot collaborative assembly."""

__version__ = "0.1.0"
