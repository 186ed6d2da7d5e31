"""
ComfyUI-JK-ModelCounter
Approximate projected model counting nodes for ComfyUI
"""

from .jk_modelcount.nodes import ApproxModelCount, DensityScheduleTable, PrefixHashDump

NODE_CLASS_MAPPINGS = {
    "JK_ApproxModelCount": ApproxModelCount,
    "JK_DensityScheduleTable": DensityScheduleTable,
    "JK_PrefixHashDump": PrefixHashDump
}

NODE_DISPLAY_NAME_MAPPINGS = {
    "JK_ApproxModelCount": "Approximate Model Count",
    "JK_DensityScheduleTable": "Density Schedule Table",
    "JK_PrefixHashDump": "Prefix Hash Dump"
}

__all__ = ['NODE_CLASS_MAPPINGS', 'NODE_DISPLAY_NAME_MAPPINGS']

print("✓ JK-ModelCounter loaded successfully")
