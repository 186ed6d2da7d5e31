# Tests package for ComfyUI-JK-ModelCounter
