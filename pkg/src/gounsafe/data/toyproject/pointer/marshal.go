package pointer

import "unsafe"

type header struct {
	size uint32
	kind uint16
}

func marshalHeader(h *header, buf []byte) {
	src := (*[6]byte)(unsafe.Pointer(h))
	copy(buf, src[:])
}

func unmarshalHeader(buf []byte) *header {
	return (*header)(unsafe.Pointer(&buf[0]))
}
