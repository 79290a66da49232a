"""City-scene compiler: semantic maps to editable, exportable 3D urban scenes."""

__version__ = "0.1.0"
