package loops

import "unsafe"

func addrs(xs []int) []uintptr {
	out := make([]uintptr, 0, len(xs))
	for i := range xs {
		out = append(out, uintptr(unsafe.Pointer(&xs[i])))
	}
	return out
}
