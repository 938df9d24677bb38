"""Shop domain, persistence and workflows."""
