try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

loads = tomllib.loads
TOMLDecodeError = tomllib.TOMLDecodeError


def load_path(path):
    with open(path, "rb") as fh:
        return tomllib.load(fh)
