package chain

import "unsafe"

func write(s *outer, p unsafe.Pointer) {
	s.f1.f2.f3 = p
}
