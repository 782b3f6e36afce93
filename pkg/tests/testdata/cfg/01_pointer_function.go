package proto

import "unsafe"

const ptrSize = 8

func toAddrPointer(i *interface{}, isptr bool) pointer {
	if isptr {
		return pointer{p: unsafe.Pointer(uintptr(unsafe.Pointer(i)) + ptrSize)}
	}
	return pointer{p: unsafe.Pointer(i)}
}
