"""Reports over shop data."""
