package branch

import "unsafe"

func pick(a, b *int, first bool) unsafe.Pointer {
	var p unsafe.Pointer
	if first {
		p = unsafe.Pointer(a)
	} else {
		p = unsafe.Pointer(b)
	}
	return p
}
