from rich.console import Console

# Log records go to stderr so command output on stdout stays machine-readable.
stderr_console = Console(stderr=True)
