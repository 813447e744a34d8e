"""Bounce-Bind Ising machine solver and benchmark harness."""
