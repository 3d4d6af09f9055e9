"""Local and occupation times of simple random walk on Z^d."""
