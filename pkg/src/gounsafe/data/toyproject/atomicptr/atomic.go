package atomicptr

import (
	"sync/atomic"
	"unsafe"
)

type node struct {
	next  *node
	value int
}

type Stack struct {
	head unsafe.Pointer
}

func (s *Stack) Push(v int) {
	n := &node{value: v}
	for {
		old := atomic.LoadPointer(&s.head)
		n.next = (*node)(old)
		if atomic.CompareAndSwapPointer(&s.head, old, unsafe.Pointer(n)) {
			return
		}
	}
}

func (s *Stack) Top() *node {
	return (*node)(atomic.LoadPointer(&s.head))
}

func store(p *unsafe.Pointer, n *node) {
	atomic.StorePointer(p, unsafe.Pointer(n))
}
