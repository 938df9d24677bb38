"""Per-language syntax walkers that pull declarations, imports and calls out of a file.

Only top-level type declarations become classes. Functions nested in other functions are
folded into their enclosing function, so calls made inside them count for the outer one."""
from __future__ import annotations
from dataclasses import dataclass, field
import logging
import re
from typing import Any, ClassVar

from archrecon.util.parser import get_parser, has_grammar
from archrecon.util.utils import Diagnostic, Language


logger = logging.getLogger(__name__)

_ALIAS = re.compile(r'\s+as\s+\w+')

Node = Any  # tree_sitter.Node


@dataclass(frozen=True)
class ImportRef:
    """A raw import as written in the source. `names` are the imported members, `level` the
number of leading dots of a relative Python import."""
    target: str
    names: tuple[str, ...] = ()
    level: int = 0


@dataclass
class ClassDecl:
    name: str
    bases: list[str] = field(default_factory=list)
    calls: list[str] = field(default_factory=list)


@dataclass
class FunctionDecl:
    name: str
    owner: str | None = None
    calls: list[str] = field(default_factory=list)

    @property
    def is_constructor(self) -> bool:
        return self.owner is not None and self.owner == self.name


@dataclass
class FileSymbols:
    """Everything the reference index needs from one file."""
    path: str
    language: Language
    parsed: bool = True
    classes: list[ClassDecl] = field(default_factory=list)
    functions: list[FunctionDecl] = field(default_factory=list)
    imports: list[ImportRef] = field(default_factory=list)
    implementations: list[tuple[str, str]] = field(default_factory=list)
    module_calls: list[str] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)


class Extractor:
    """Generic walker. Subclasses name the node types of their grammar."""
    CLASS_TYPES: ClassVar[frozenset[str]] = frozenset()
    FUNCTION_TYPES: ClassVar[frozenset[str]] = frozenset()
    CALL_TYPES: ClassVar[frozenset[str]] = frozenset()
    IMPORT_TYPES: ClassVar[frozenset[str]] = frozenset()

    def __init__(self, path: str, language: Language, source: bytes):
        self.source = source
        self.symbols = FileSymbols(path, language)

    def text(self, node: Node | None) -> str:
        if node is None:
            return ''
        return self.source[node.start_byte:node.end_byte].decode('utf8', errors='replace')

    def run(self, root: Node) -> FileSymbols:
        stack: list[tuple[Node, ClassDecl | None, FunctionDecl | None, str | None]] = [
                (root, None, None, None)]
        while stack:
            node, cls, func, owner = stack.pop()
            cls, func, owner = self.visit(node, cls, func, owner)
            stack.extend((child, cls, func, owner) for child in reversed(node.children))
        return self.symbols

    def visit(self, node: Node, cls: ClassDecl | None, func: FunctionDecl | None,
              owner: str | None
              ) -> tuple[ClassDecl | None, FunctionDecl | None, str | None]:
        """Record what `node` declares and return the context for its children."""
        kind = node.type
        if kind in self.IMPORT_TYPES:
            self.symbols.imports.extend(self.imports_of(node))
        if kind in self.CLASS_TYPES and cls is None and func is None:
            name = self.class_name(node)
            if name:
                cls = ClassDecl(name, self.bases_of(node))
                self.symbols.classes.append(cls)
                owner = name
        elif kind in self.FUNCTION_TYPES and func is None:
            name, declared_owner = self.function_name(node)
            if name:
                func = FunctionDecl(name, declared_owner or owner)
                self.symbols.functions.append(func)
        elif func is None and cls is None:
            owner = self.scope_owner(node) or owner
        if kind in self.CALL_TYPES:
            callee = self.callee_of(node)
            if callee:
                if func is not None:
                    func.calls.append(callee)
                elif cls is not None:
                    cls.calls.append(callee)
                else:
                    self.symbols.module_calls.append(callee)
        return cls, func, owner

    def class_name(self, node: Node) -> str:
        return self.text(node.child_by_field_name('name'))

    def bases_of(self, node: Node) -> list[str]:
        return []

    def function_name(self, node: Node) -> tuple[str, str | None]:
        return self.text(node.child_by_field_name('name')), None

    def scope_owner(self, node: Node) -> str | None:
        """Owner for functions declared below `node` outside a class, e.g. an impl block."""
        return None

    def callee_of(self, node: Node) -> str:
        return ''

    def imports_of(self, node: Node) -> list[ImportRef]:
        return []

    def type_names(self, node: Node | None) -> list[str]:
        """Simple names of the types referenced in a heritage clause."""
        names: list[str] = []
        if node is None:
            return names

        def visit(current: Node) -> None:
            if current.type in ('type_arguments', 'template_argument_list', 'arguments',
                                'type_parameters'):
                return
            if current.type in ('identifier', 'type_identifier'):
                names.append(self.text(current))
            elif current.type in ('scoped_type_identifier', 'member_expression',
                                  'qualified_identifier', 'nested_type_identifier',
                                  'attribute', 'scoped_identifier'):
                last = [child for child in current.named_children
                        if child.type in ('identifier', 'type_identifier',
                                          'property_identifier', 'template_type')]
                if last:
                    visit(last[-1])
            else:
                for child in current.named_children:
                    visit(child)

        visit(node)
        return names


class PythonExtractor(Extractor):
    CLASS_TYPES = frozenset({'class_definition'})
    FUNCTION_TYPES = frozenset({'function_definition'})
    CALL_TYPES = frozenset({'call'})
    IMPORT_TYPES = frozenset({'import_statement', 'import_from_statement'})

    def bases_of(self, node):
        superclasses = node.child_by_field_name('superclasses')
        if superclasses is None:
            return []
        bases = []
        for child in superclasses.named_children:
            if child.type == 'identifier':
                bases.append(self.text(child))
            elif child.type == 'attribute':
                bases.append(self.text(child.child_by_field_name('attribute')))
        return bases

    def callee_of(self, node):
        function = node.child_by_field_name('function')
        if function is None:
            return ''
        if function.type == 'identifier':
            return self.text(function)
        if function.type == 'attribute':
            return self.text(function.child_by_field_name('attribute'))
        return ''

    def imports_of(self, node):
        if node.type == 'import_statement':
            refs = []
            for name in node.children_by_field_name('name'):
                if name.type == 'aliased_import':
                    name = name.child_by_field_name('name')
                refs.append(ImportRef(self.text(name)))
            return refs
        module = node.child_by_field_name('module_name')
        level = 0
        target = self.text(module)
        if module is not None and module.type == 'relative_import':
            prefix = next((c for c in module.children if c.type == 'import_prefix'), None)
            level = len(self.text(prefix))
            dotted = next((c for c in module.named_children if c.type == 'dotted_name'), None)
            target = self.text(dotted)
        names = []
        for name in node.children_by_field_name('name'):
            if name.type == 'aliased_import':
                name = name.child_by_field_name('name')
            names.append(self.text(name))
        if any(child.type == 'wildcard_import' for child in node.children):
            names.append('*')
        return [ImportRef(target, tuple(names), level)]


class JavaExtractor(Extractor):
    CLASS_TYPES = frozenset({'class_declaration', 'interface_declaration', 'enum_declaration',
                             'record_declaration', 'annotation_type_declaration'})
    FUNCTION_TYPES = frozenset({'method_declaration', 'constructor_declaration'})
    CALL_TYPES = frozenset({'method_invocation', 'object_creation_expression'})
    IMPORT_TYPES = frozenset({'import_declaration'})

    def bases_of(self, node):
        bases = []
        for child in node.children:
            if child.type in ('superclass', 'super_interfaces', 'extends_interfaces'):
                bases.extend(self.type_names(child))
        return bases

    def callee_of(self, node):
        if node.type == 'object_creation_expression':
            names = self.type_names(node.child_by_field_name('type'))
            return names[-1] if names else ''
        return self.text(node.child_by_field_name('name'))

    def imports_of(self, node):
        text = self.text(node)
        text = text.replace('import', '', 1).replace('static ', '', 1)
        target = ''.join(text.split()).rstrip(';')
        return [ImportRef(target)] if target else []


class GoExtractor(Extractor):
    CLASS_TYPES = frozenset({'type_spec'})
    FUNCTION_TYPES = frozenset({'function_declaration', 'method_declaration'})
    CALL_TYPES = frozenset({'call_expression'})
    IMPORT_TYPES = frozenset({'import_spec'})

    def function_name(self, node):
        name = self.text(node.child_by_field_name('name'))
        receiver = node.child_by_field_name('receiver')
        if receiver is None:
            return name, None
        types = self.type_names(receiver)
        return name, types[-1] if types else None

    def callee_of(self, node):
        function = node.child_by_field_name('function')
        if function is None:
            return ''
        if function.type == 'identifier':
            return self.text(function)
        if function.type == 'selector_expression':
            return self.text(function.child_by_field_name('field'))
        return ''

    def imports_of(self, node):
        path = self.text(node.child_by_field_name('path')).strip('"`')
        return [ImportRef(path)] if path else []


class CExtractor(Extractor):
    CLASS_TYPES = frozenset({'struct_specifier', 'union_specifier', 'class_specifier'})
    FUNCTION_TYPES = frozenset({'function_definition'})
    CALL_TYPES = frozenset({'call_expression'})
    IMPORT_TYPES = frozenset({'preproc_include'})

    def class_name(self, node):
        if node.child_by_field_name('body') is None:
            return ''
        return self.text(node.child_by_field_name('name'))

    def bases_of(self, node):
        clause = next((c for c in node.children if c.type == 'base_class_clause'), None)
        return self.type_names(clause)

    def function_name(self, node):
        declarator = node.child_by_field_name('declarator')
        while declarator is not None and declarator.type != 'function_declarator':
            declarator = declarator.child_by_field_name('declarator')
        if declarator is None:
            return '', None
        name = declarator.child_by_field_name('declarator')
        if name is not None and name.type == 'qualified_identifier':
            scope = self.text(name.child_by_field_name('scope')) or None
            inner = name.child_by_field_name('name')
            while inner is not None and inner.type == 'qualified_identifier':
                scope = self.text(inner.child_by_field_name('scope')) or scope
                inner = inner.child_by_field_name('name')
            return self.text(inner).lstrip('~'), scope
        return self.text(name).lstrip('~'), None

    def callee_of(self, node):
        function = node.child_by_field_name('function')
        while function is not None:
            if function.type in ('identifier', 'field_identifier'):
                return self.text(function)
            if function.type == 'field_expression':
                function = function.child_by_field_name('field')
            elif function.type in ('qualified_identifier', 'template_function'):
                function = function.child_by_field_name('name')
            else:
                return ''
        return ''

    def imports_of(self, node):
        path = self.text(node.child_by_field_name('path')).strip()
        return [ImportRef(path)] if path else []


class JavaScriptExtractor(Extractor):
    CLASS_TYPES = frozenset({'class_declaration', 'abstract_class_declaration',
                             'interface_declaration'})
    FUNCTION_TYPES = frozenset({'function_declaration', 'generator_function_declaration',
                                'method_definition', 'variable_declarator'})
    CALL_TYPES = frozenset({'call_expression', 'new_expression'})
    IMPORT_TYPES = frozenset({'import_statement', 'export_statement', 'call_expression'})

    def bases_of(self, node):
        bases = []
        for child in node.children:
            if child.type in ('class_heritage', 'extends_type_clause'):
                bases.extend(self.type_names(child))
        return bases

    def function_name(self, node):
        if node.type == 'variable_declarator':
            value = node.child_by_field_name('value')
            if value is None or value.type not in ('arrow_function', 'function_expression',
                                                   'function'):
                return '', None
        name = node.child_by_field_name('name')
        if name is None or name.type not in ('identifier', 'property_identifier',
                                             'type_identifier'):
            return '', None
        return self.text(name), None

    def callee_of(self, node):
        if node.type == 'new_expression':
            names = self.type_names(node.child_by_field_name('constructor'))
            return names[-1] if names else ''
        function = node.child_by_field_name('function')
        if function is None:
            return ''
        if function.type == 'identifier':
            name = self.text(function)
            return '' if name == 'require' else name
        if function.type == 'member_expression':
            return self.text(function.child_by_field_name('property'))
        return ''

    def imports_of(self, node):
        if node.type == 'call_expression':
            function = node.child_by_field_name('function')
            if function is None or self.text(function) != 'require':
                return []
            arguments = node.child_by_field_name('arguments')
            strings = [c for c in arguments.named_children if c.type == 'string'] \
                if arguments is not None else []
            return [ImportRef(self.text(strings[0]).strip('\'"`'))] if strings else []
        source = node.child_by_field_name('source')
        if source is None:
            return []
        return [ImportRef(self.text(source).strip('\'"`'))]


class RustExtractor(Extractor):
    CLASS_TYPES = frozenset({'struct_item', 'enum_item', 'trait_item', 'union_item'})
    FUNCTION_TYPES = frozenset({'function_item'})
    CALL_TYPES = frozenset({'call_expression'})
    IMPORT_TYPES = frozenset({'use_declaration', 'mod_item'})

    def scope_owner(self, node):
        if node.type != 'impl_item':
            return None
        implementing = self.type_names(node.child_by_field_name('type'))
        if not implementing:
            return None
        trait = self.type_names(node.child_by_field_name('trait'))
        if trait:
            self.symbols.implementations.append((implementing[-1], trait[-1]))
        return implementing[-1]

    def callee_of(self, node):
        function = node.child_by_field_name('function')
        while function is not None:
            if function.type == 'identifier':
                return self.text(function)
            if function.type == 'field_expression':
                return self.text(function.child_by_field_name('field'))
            if function.type == 'scoped_identifier':
                return self.text(function.child_by_field_name('name'))
            if function.type == 'generic_function':
                function = function.child_by_field_name('function')
            else:
                return ''
        return ''

    def imports_of(self, node):
        if node.type == 'mod_item':
            if node.child_by_field_name('body') is not None:
                return []
            return [ImportRef(f'mod:{self.text(node.child_by_field_name("name"))}')]
        argument = _ALIAS.sub('', self.text(node.child_by_field_name('argument')))
        argument = ''.join(argument.split())
        if '::{' in argument:
            base, _, members = argument.partition('::{')
            names = tuple(member.split('::')[0]
                          for member in members.rstrip('}').split(',') if member)
            return [ImportRef(base, names)]
        base, _, last = argument.rpartition('::')
        return [ImportRef(base or last, (last,) if base else ())]


EXTRACTORS: dict[Language, type[Extractor]] = {
    Language.PYTHON: PythonExtractor,
    Language.JAVA: JavaExtractor,
    Language.GO: GoExtractor,
    Language.C: CExtractor,
    Language.CPP: CExtractor,
    Language.JAVASCRIPT: JavaScriptExtractor,
    Language.TYPESCRIPT: JavaScriptExtractor,
    Language.RUST: RustExtractor,
}


def extract_symbols(path: str, language: Language, content: str) -> FileSymbols:
    """Parse one file. Files without a grammar or with syntax errors yield no structure and a
diagnostic instead of an error."""
    if not has_grammar(language) or language not in EXTRACTORS:
        symbols = FileSymbols(path, language, parsed=False)
        symbols.diagnostics.append(Diagnostic(
                path, f'no grammar for {language.value}; file has no internal structure'))
        return symbols
    source = content.encode('utf8')
    try:
        tree = get_parser(path, language).parse(source)
    except (ValueError, ImportError) as error:
        symbols = FileSymbols(path, language, parsed=False)
        symbols.diagnostics.append(Diagnostic(path, f'parse failure: {error}'))
        return symbols
    if tree.root_node.has_error:
        symbols = FileSymbols(path, language, parsed=False)
        symbols.diagnostics.append(Diagnostic(path, 'parse failure: syntax errors in file'))
        return symbols
    symbols = EXTRACTORS[language](path, language, source).run(tree.root_node)
    if symbols.module_calls:
        logger.debug('%s: %d module level calls are not attributed', path,
                     len(symbols.module_calls))
    return symbols