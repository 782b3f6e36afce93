package proto

import "unsafe"

var headerSize = unsafe.Sizeof(header{})
