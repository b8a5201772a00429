"""HTTP gateway, scenario runner, and command-line entry points."""
