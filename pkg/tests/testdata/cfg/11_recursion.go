package rec

import "unsafe"

func walk(p unsafe.Pointer, n int) int {
	if n == 0 {
		return 0
	}
	return walk(p, n-1) + 1
}
