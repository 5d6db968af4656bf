"""Interactive embodied task planning loop: world simulation, perception
and reachability feedback, prompt protocol, rule and remote planning
backends, dataset generation, and an evaluation harness.
"""

__version__ = "0.1.0"
