package layout

import "unsafe"

type entry struct {
	key   uint64
	value uint32
	flag  bool
}

var entrySize = unsafe.Sizeof(entry{})

const wordSize = unsafe.Sizeof(uintptr(0))

func valueOffset() uintptr {
	var e entry
	return unsafe.Offsetof(e.value)
}

func alignment() uintptr {
	var e entry
	return unsafe.Alignof(e.key)
}

func at(base unsafe.Pointer, i int) *entry {
	return (*entry)(unsafe.Pointer(uintptr(base) + uintptr(i)*entrySize))
}

type table struct {
	data unsafe.Pointer
	n    int
}
