"""Source package for local sample weighting (losaw) feature importance."""
