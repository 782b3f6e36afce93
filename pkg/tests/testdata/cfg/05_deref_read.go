package chain

import "unsafe"

func read(s *outer) unsafe.Pointer {
	v := s.f1.f2.f3
	return unsafe.Pointer(v)
}
