package branch

import "unsafe"

func size(kind int) uintptr {
	switch kind {
	case 1:
		return unsafe.Sizeof(int8(0))
	case 2:
		return unsafe.Sizeof(int16(0))
	default:
		return 0
	}
}
