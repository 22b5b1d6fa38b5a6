"""Goal-oriented resource allocation for edge networks."""
