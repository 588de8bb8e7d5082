"""Performance tests for splurge-cnoma-capacity."""
