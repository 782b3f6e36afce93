package proto

import "unsafe"

type pointer struct {
	p unsafe.Pointer
}
