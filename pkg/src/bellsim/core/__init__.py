"""Core domain types, configuration and randomness for bellsim."""
