"""Competitive chess arena for automated players: rules kernel, Glicko
ratings with convergence-optimal pairing, UCI engine analysis, play-mode
prompting, match orchestration, and fine-grained evaluation tasks."""

__version__ = "0.1.0"
