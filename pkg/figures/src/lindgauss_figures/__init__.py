"""Figure rendering for lindgauss artifacts (CSV/JSON/field containers)."""
