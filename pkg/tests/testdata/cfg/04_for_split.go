package loops

import "unsafe"

func sum(p unsafe.Pointer) uintptr {
	var s uintptr
	for i := 0; i < 6; i++ {
		s += uintptr(p) + uintptr(i)
	}
	return s
}
