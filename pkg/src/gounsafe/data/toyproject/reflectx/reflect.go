package reflectx

import (
	"reflect"
	"unsafe"
)

type eface struct {
	typ  unsafe.Pointer
	word unsafe.Pointer
}

func dataOf(i interface{}) unsafe.Pointer {
	return (*eface)(unsafe.Pointer(&i)).word
}

func setField(v reflect.Value, x int) {
	p := unsafe.Pointer(v.UnsafeAddr())
	*(*int)(p) = x
}

func swap(a, b unsafe.Pointer, size uintptr) {
	for i := uintptr(0); i < size; i++ {
		pa := (*byte)(unsafe.Pointer(uintptr(a) + i))
		pb := (*byte)(unsafe.Pointer(uintptr(b) + i))
		*pa, *pb = *pb, *pa
	}
}
