"""Market (macroeconomic) and nonmarket damage modules."""
