package loops

import "unsafe"

func find(base unsafe.Pointer, n int) int {
	for i := 0; i < n; i++ {
		b := *(*byte)(unsafe.Pointer(uintptr(base) + uintptr(i)))
		if b == 0 {
			break
		}
		if b == 1 {
			continue
		}
	}
	return -1
}
