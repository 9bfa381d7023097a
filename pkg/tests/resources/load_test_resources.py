"""Module resources for loading test corpora from the test resources package."""

from importlib import resources


def load_test_resource(test_resource_filename: str) -> str:
    """
    Locate a resource file in the resources folder of the current module's package.

    Args:
        test_resource_filename: Name of the resource file to load (e.g., 'tiny_train.txt').

    Returns:
        str: Path to the resource file.

    Raises:
        FileNotFoundError: If the resource file doesn't exist.
    """
    current_package = __name__.rsplit(".", 1)[0]
    resource_path = resources.files(current_package).joinpath(test_resource_filename)

    if not resource_path.is_file():
        raise FileNotFoundError(f"Resource file '{test_resource_filename}' not found in {current_package}")
    return str(resource_path)
