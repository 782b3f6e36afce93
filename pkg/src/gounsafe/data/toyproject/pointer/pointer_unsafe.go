package pointer

import "unsafe"

const ptrSize = 8

type pointer struct {
	p unsafe.Pointer
}

var nilPointer = pointer{p: unsafe.Pointer(nil)}

// toAddrPointer converts an interface to a pointer that points to the interface data.
func toAddrPointer(i *interface{}, isptr bool) pointer {
	if isptr {
		return pointer{p: unsafe.Pointer(uintptr(unsafe.Pointer(i)) + ptrSize)}
	}
	return pointer{p: unsafe.Pointer(i)}
}

func (p pointer) offset(off uintptr) pointer {
	return pointer{p: unsafe.Pointer(uintptr(p.p) + off)}
}

func (p pointer) toInt64() *int64 {
	return (*int64)(p.p)
}

func (p pointer) toBytes() *[]byte {
	return (*[]byte)(p.p)
}

func (p pointer) isNil() bool {
	return p.p == nil
}
