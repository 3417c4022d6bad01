# Robust nuclear-norm matrix completion package
