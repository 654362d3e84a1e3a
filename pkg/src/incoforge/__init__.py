"""incoforge: benchmark forging, detection models, and verification tooling
for narrative incoherence tasks (missing / discordant sentence detection)."""

__version__ = "0.1.0"
