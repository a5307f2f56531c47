from enum import Enum


class OrientationEnum(Enum):
    # entry (i, j) of the Laplacian: node i senses the state of node j
    SENSING = "sensing"
    # transpose: the state of node i is available to node j
    SENDING = "sending"
