__version__ = "0.1.0"


def create_cli():
    # 1. Import lazily so that `import nshr` does not parse the constants table
    from .cli import cli

    return cli
