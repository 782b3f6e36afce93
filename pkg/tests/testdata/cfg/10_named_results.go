package results

import "unsafe"

func split(p unsafe.Pointer) (lo, hi uint32) {
	v := *(*uint64)(p)
	lo = uint32(v)
	hi = uint32(v >> 32)
	return
}
