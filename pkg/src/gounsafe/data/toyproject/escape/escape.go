package escape

import "unsafe"

func noescape(p unsafe.Pointer) unsafe.Pointer {
	x := uintptr(p)
	return unsafe.Pointer(x ^ 0)
}

func keep(buf *[64]byte) *byte {
	return (*byte)(noescape(unsafe.Pointer(buf)))
}

func ignore(_ unsafe.Pointer) {
}
