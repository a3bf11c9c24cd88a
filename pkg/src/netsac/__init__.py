"""Scalable actor-critic for networked multi-agent MDPs."""
