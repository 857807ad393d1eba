# Tests for tower_coverage app
